//! Acceptance run: one PASS/FAIL line per primary criterion.
//!
//! Runs without the libtest harness, so the report is always printed.
//! Exits non-zero on any failure not listed in `KNOWN_FAILURES`.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use csng::baseline_cluster::{compare, kmeans, pca, run_baseline, BaselineParams, KMeansInit, KMeansOptions, Matrix};
use csng::community::{
    detect, louvain, CommunityError, CommunityTree, MergeOptions, NodeId, SplitOutcome, UndirectedWeightedGraph, ROOT,
};
use csng::csng_graph::{build_csng, BuildOptions, Csng, Directedness};
use csng::curve_model::Dataset;
use csng::field_tracer::{trace, trace_from, AnalyticKind, Seeding, TraceConfig, VectorField};
use csng::geom::{Aabb, Vec3};
use csng::layout_engine::{aggregate, run_layout, run_to_convergence, CompoundEdge, CompoundGraph, CompoundNode, LayoutParams, LayoutState};
use csng::segment_index::{polyline_distance, segment_distance, Radius, SegmentDistanceMetric, SegmentKdTree};
use csng::synthetic;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------- neighbor search

fn brute_sorted(segs: &[csng::curve_model::CurveSegment], q: usize, metric: SegmentDistanceMetric) -> Vec<(usize, f64)> {
    let mut all: Vec<(usize, f64)> =
        segs.iter().filter(|s| s.id != q).map(|s| (s.id, segment_distance(&segs[q], s, metric))).collect();
    all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    all
}

fn neighbor_search() -> Outcome {
    let started = Instant::now();
    let mut checked = 0usize;
    for seed in [101, 202, 303] {
        let mut ds = synthetic::random_walks(200, 41, 100.0, seed);
        ds.decompose(4).map_err(|e| e.to_string())?;
        let segs = &ds.segments;
        ensure(segs.len() == 2000, || format!("dataset {seed} has {} segments", segs.len()))?;
        let tree = SegmentKdTree::build(segs, 16).map_err(|e| e.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let queries: Vec<usize> = (0..200).map(|_| rng.random_range(0..segs.len())).collect();
        for metric in SegmentDistanceMetric::ALL {
            for &q in &queries {
                let oracle = brute_sorted(segs, q, metric);
                for k in [1, 10, 60] {
                    let got: Vec<(usize, f64)> =
                        tree.knn(q, k, metric).map_err(|e| e.to_string())?.neighbors.iter().map(|n| (n.id, n.distance)).collect();
                    ensure(got == oracle[..k], || format!("knn mismatch: dataset {seed}, {metric}, q={q}, k={k}"))?;
                    checked += 1;
                }
                for frac in [0.01, 0.10] {
                    let r = frac * ds.bounds_diagonal;
                    let want: Vec<(usize, f64)> = oracle.iter().copied().filter(|&(_, d)| d < r).collect();
                    let got: Vec<(usize, f64)> =
                        tree.rbn(q, r, metric).map_err(|e| e.to_string())?.neighbors.iter().map(|n| (n.id, n.distance)).collect();
                    ensure(got == want, || format!("rbn mismatch: dataset {seed}, {metric}, q={q}, R={frac}"))?;
                    checked += 1;
                }
            }
        }
    }
    let secs = started.elapsed().as_secs_f64();
    ensure(secs < 60.0, || format!("took {secs:.1}s"))?;
    Ok(format!("{checked} queries identical to exhaustive search, {secs:.1}s"))
}

// ---------------------------------------------------------------- metric laws

fn random_polyline(rng: &mut ChaCha8Rng) -> Vec<Vec3> {
    let n = rng.random_range(2..=9);
    let mut p = Vec3::new(rng.random(), rng.random(), rng.random()) * 3.0;
    let mut out = vec![p];
    for _ in 1..n {
        p = p + Vec3::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
        out.push(p);
    }
    out
}

fn sampled_distance(p: Vec3, line: &[Vec3], per_edge: usize) -> f64 {
    line.windows(2)
        .flat_map(|w| (0..=per_edge).map(move |i| p.dist(w[0].lerp(w[1], i as f64 / per_edge as f64))))
        .fold(f64::INFINITY, f64::min)
}

fn dense_hausdorff(a: &[Vec3], b: &[Vec3]) -> f64 {
    let ab = a.iter().map(|&p| sampled_distance(p, b, 5000)).fold(0.0, f64::max);
    let ba = b.iter().map(|&p| sampled_distance(p, a, 5000)).fold(0.0, f64::max);
    ab.max(ba)
}

fn metric_laws() -> Outcome {
    use SegmentDistanceMetric::{Average, Longest, Shortest};
    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    for i in 0..10_000 {
        let a = random_polyline(&mut rng);
        let b = random_polyline(&mut rng);
        let [s, l, m] = [Shortest, Longest, Average].map(|metric| polyline_distance(&a, &b, metric));
        for (metric, d) in [(Shortest, s), (Longest, l), (Average, m)] {
            ensure(d.to_bits() == polyline_distance(&b, &a, metric).to_bits(), || format!("pair {i}: {metric} not symmetric"))?;
            ensure(d >= 0.0 && d.is_finite(), || format!("pair {i}: {metric} = {d}"))?;
            ensure(polyline_distance(&a, &a, metric) == 0.0, || format!("pair {i}: {metric} identity"))?;
        }
        ensure(l >= m && m >= s, || format!("pair {i}: ordering {l} {m} {s}"))?;
    }
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let a = random_polyline(&mut rng);
        let b = random_polyline(&mut rng);
        worst = worst.max((polyline_distance(&a, &b, Longest) - dense_hausdorff(&a, &b)).abs());
    }
    ensure(worst <= 1e-3, || format!("Hausdorff deviates by {worst:.2e}"))?;
    Ok(format!("laws exact on 10^4 pairs; Hausdorff vs dense sampling max |err| {worst:.1e}"))
}

// ---------------------------------------------------------------- modularity

type Dense = Vec<Vec<f64>>;

fn dense_graph(a: &Dense) -> UndirectedWeightedGraph {
    let n = a.len();
    let edges = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).filter(|&(i, j)| a[i][j] > 0.0).map(|(i, j)| (i, j, a[i][j]));
    UndirectedWeightedGraph::from_edges(n, edges.collect::<Vec<_>>())
}

fn matrix_q(a: &Dense, labels: &[usize]) -> f64 {
    let k: Vec<f64> = a.iter().map(|r| r.iter().sum()).collect();
    let two_m: f64 = k.iter().sum();
    let n = a.len();
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            if labels[i] == labels[j] {
                q += a[i][j] - k[i] * k[j] / two_m;
            }
        }
    }
    q / two_m
}

fn all_partitions(n: usize) -> Vec<Vec<usize>> {
    fn rec(n: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for l in 0..=max + 1 {
            cur.push(l);
            rec(n, max.max(l), cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, 0, &mut vec![0], &mut out);
    out
}

fn optimum(a: &Dense) -> (Vec<usize>, f64) {
    all_partitions(a.len())
        .into_iter()
        .map(|p| {
            let q = matrix_q(a, &p);
            (p, q)
        })
        .fold((Vec::new(), f64::NEG_INFINITY), |best, c| if c.1 > best.1 { c } else { best })
}

fn clique_pair(a: usize, b: usize) -> Dense {
    let n = a + b;
    let mut m = vec![vec![0.0; n]; n];
    for (i, row) in m.iter_mut().enumerate() {
        for (j, w) in row.iter_mut().enumerate() {
            if i != j && (i < a) == (j < a) {
                *w = 1.0;
            }
        }
    }
    m[a - 1][a] = 1.0;
    m[a][a - 1] = 1.0;
    m
}

fn random_dense(n: usize, p: f64, rng: &mut ChaCha8Rng) -> Dense {
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p {
                let w = 0.1 + 0.9 * rng.random::<f64>();
                m[i][j] = w;
                m[j][i] = w;
            }
        }
    }
    // keeps every graph non-empty
    m[0][1] = m[0][1].max(0.5);
    m[1][0] = m[0][1];
    m
}

fn monotone(h: &[f64]) -> bool {
    h.windows(2).all(|w| w[1] >= w[0] - 1e-12)
}

fn modularity_cliques(histories: &mut Vec<Vec<f64>>) -> Outcome {
    for (a, b) in [(4, 4), (5, 5)] {
        let m = clique_pair(a, b);
        let (best, q_best) = optimum(&m);
        for seed in 0..10 {
            let r = louvain(&dense_graph(&m), 1.0, seed).map_err(|e| e.to_string())?;
            histories.push(r.history.clone());
            ensure(r.partition.labels == best, || format!("{a}+{b} seed {seed}: {:?} vs optimum {best:?}", r.partition.labels))?;
            ensure((r.modularity - q_best).abs() < 1e-12, || format!("{a}+{b} seed {seed}: Q {} vs {q_best}", r.modularity))?;
        }
    }
    Ok("4+4 and 5+5 match the exhaustive optimum for seeds 0..10".into())
}

fn modularity_random(histories: &mut Vec<Vec<f64>>) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = (f64::INFINITY, 0);
    let mut below = Vec::new();
    for case in 0..20 {
        let m = random_dense(8, 0.4, &mut rng);
        let (_, q_best) = optimum(&m);
        let r = louvain(&dense_graph(&m), 1.0, 0).map_err(|e| e.to_string())?;
        histories.push(r.history.clone());
        let ratio = r.modularity / q_best;
        if ratio < worst.0 {
            worst = (ratio, case);
        }
        if ratio < 0.95 {
            below.push(format!("case {case}: Q {:.5} / optimum {q_best:.5} = {ratio:.3}", r.modularity));
        }
    }
    ensure(below.is_empty(), || below.join("; "))?;
    Ok(format!("worst ratio {:.3} (case {})", worst.0, worst.1))
}

fn modularity_history(histories: &[Vec<f64>]) -> Outcome {
    let bad = histories.iter().filter(|h| !monotone(h)).count();
    ensure(bad == 0, || format!("{bad} of {} runs decreased", histories.len()))?;
    Ok(format!("{} runs non-decreasing (slack 1e-12)", histories.len()))
}

// ---------------------------------------------------------------- resolution

fn resolution_sweep() -> Outcome {
    let mut ds = synthetic::cylinder_like(12, 4).map_err(|e| e.to_string())?;
    ds.decompose(4).map_err(|e| e.to_string())?;
    let g = build_csng(&ds, &BuildOptions::knn(10)).map_err(|e| e.to_string())?;
    let counts: Vec<usize> = [0.05, 0.1, 0.5, 1.0]
        .into_iter()
        .map(|r| detect(&g, r, 7).map(|t| t.leaves().count()))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    ensure(counts.windows(2).all(|w| w[0] <= w[1]), || format!("counts {counts:?}"))?;
    ensure(counts[0] < counts[3], || format!("resolution has no effect: {counts:?}"))?;
    Ok(format!("{} segments, counts {counts:?} over γ = 0.05, 0.1, 0.5, 1.0", ds.segments.len()))
}

// ---------------------------------------------------------------- hierarchy editing

/// Checks the partition invariant from scratch: leaves tile the segments,
/// inner nodes hold exactly the union of their children.
fn partition_invariant(tree: &CommunityTree, n: usize) -> Result<(), String> {
    tree.validate().map_err(|e| e.to_string())?;
    let mut seen = vec![false; n];
    for leaf in tree.leaves() {
        for &s in &leaf.members {
            ensure(s < n && !seen[s], || format!("segment {s} in two leaves"))?;
            seen[s] = true;
        }
    }
    ensure(seen.iter().all(|&b| b), || "a segment is in no leaf".into())?;
    for node in tree.nodes() {
        let members: BTreeSet<usize> = tree.members_of(node.id).map_err(|e| e.to_string())?.into_iter().collect();
        ensure(members.len() == node.cardinality, || format!("node {} cardinality", node.id))?;
        if !node.is_leaf() {
            let mut union = BTreeSet::new();
            for &c in &node.children {
                ensure(tree.node(c).map_err(|e| e.to_string())?.parent == Some(node.id), || format!("child {c} parent link"))?;
                union.extend(tree.members_of(c).map_err(|e| e.to_string())?);
            }
            ensure(union == members, || format!("node {} is not the union of its children", node.id))?;
        }
    }
    ensure(tree.root().cardinality == n, || "root does not cover every segment".into())
}

fn hierarchy_editing() -> Outcome {
    let data = synthetic::two_bundles_and_vortex(8, 4).decomposed(4).map_err(|e| e.to_string())?;
    let n = data.dataset.segments.len();
    let g = build_csng(&data.dataset, &BuildOptions::knn(8)).map_err(|e| e.to_string())?;
    let mut tree = detect(&g, 1.0, 0).map_err(|e| e.to_string())?;
    partition_invariant(&tree, n)?;

    let mut roots: Vec<(usize, NodeId)> = tree.root().children.iter().map(|&c| (tree.node(c).unwrap().cardinality, c)).collect();
    roots.sort_by(|a, b| b.cmp(a));
    ensure(roots.len() >= 2, || "fewer than two root communities".into())?;
    let mut split = None;
    for &(_, a) in &roots {
        if let SplitOutcome::Split { children } = tree.split_node(&g, a, 0.5, 0).map_err(|e| e.to_string())? {
            split = Some((a, children));
            break;
        }
        partition_invariant(&tree, n)?;
    }
    let (a, a_children) = split.ok_or("no root community splits at γ=0.5")?;
    partition_invariant(&tree, n)?;

    let b = roots.iter().map(|&(_, id)| id).find(|&id| id != a).unwrap();
    let merged = tree.merge_nodes(&[a_children[0], b], MergeOptions::default()).map_err(|e| format!("legal merge failed: {e}"))?;
    partition_invariant(&tree, n)?;

    let m_children = match tree.split_node(&g, merged, 1.0, 0).map_err(|e| e.to_string())? {
        SplitOutcome::Split { children } => children,
        SplitOutcome::NoSplit => return Err("merged node did not split".into()),
    };
    partition_invariant(&tree, n)?;

    // a leaf left under A and a child of the merged node hang off different branches
    let under_a = tree.leaves().find(|l| l.id != merged && tree.is_ancestor_or_self(a, l.id) && l.id != a).map(|l| l.id);
    let x = under_a.ok_or("nothing left under the split community")?;
    let y = m_children[0];
    let before = tree.clone();
    match tree.merge_nodes(&[x, y], MergeOptions::default()) {
        Err(CommunityError::NotMergeable { .. }) => {}
        other => return Err(format!("cross-branch merge gave {other:?}")),
    }
    ensure(tree == before, || "failed merge modified the tree".into())?;
    partition_invariant(&tree, n)?;
    Ok(format!(
        "detect → split {a} → merge {}+{b} → split {merged} ({} children); invariant held at 5 checkpoints, cross-branch merge NotMergeable",
        a_children[0],
        m_children.len()
    ))
}

// ---------------------------------------------------------------- decomposition

fn decomposition() -> Outcome {
    let abc = VectorField::analytic(AnalyticKind::abc_default(), Aabb::new(Vec3::ZERO, Vec3::new(6.0, 6.0, 6.0)));
    let traced = trace(&abc, &TraceConfig::new(Seeding::Random { count: 24, seed: 3 }, 0.05, 97)).map_err(|e| e.to_string())?;
    let sets: Vec<(&str, Dataset)> = vec![
        ("random walks", synthetic::random_walks(30, 37, 10.0, 1)),
        ("three bundles", synthetic::three_bundles(5, 2).dataset),
        ("bundles + vortex", synthetic::two_bundles_and_vortex(5, 3).dataset),
        ("cylinder", synthetic::cylinder_like(6, 2).map_err(|e| e.to_string())?),
        ("abc", traced),
    ];
    let mut total = 0;
    for (name, base) in &sets {
        for span in [1, 2, 3, 5, 8] {
            let mut ds = base.clone();
            ds.decompose(span).map_err(|e| e.to_string())?;
            for line in &ds.lines {
                let edges = line.vertices.len() - 1;
                let segs: Vec<_> = ds.segments.iter().filter(|s| s.line_id == line.id).collect();
                ensure(segs.len() == edges.div_ceil(span), || format!("{name} L={span}: count"))?;
                for (i, s) in segs.iter().enumerate() {
                    let want = if i + 1 < segs.len() { span } else { edges - span * (segs.len() - 1) };
                    ensure(s.point_count() - 1 == want, || format!("{name} L={span}: segment {i} spans {}", s.point_count() - 1))?;
                }
                let mut rebuilt: Vec<Vec3> = vec![segs[0].points[0]];
                for s in &segs {
                    ensure(s.points[0] == *rebuilt.last().unwrap(), || format!("{name} L={span}: gap"))?;
                    rebuilt.extend_from_slice(&s.points[1..]);
                }
                let exact = rebuilt.len() == line.vertices.len()
                    && rebuilt.iter().zip(&line.vertices).all(|(a, b)| {
                        a.x.to_bits() == b.x.to_bits() && a.y.to_bits() == b.y.to_bits() && a.z.to_bits() == b.z.to_bits()
                    });
                ensure(exact, || format!("{name} L={span}: reconstruction differs"))?;
            }
            total += ds.segments.len();
        }
    }
    Ok(format!("{} datasets × L ∈ {{1,2,3,5,8}}, {total} segments checked", sets.len()))
}

// ---------------------------------------------------------------- RK4

fn rk4() -> Outcome {
    let circular = VectorField::analytic(AnalyticKind::Circular, Aabb::new(Vec3::new(-2.0, -2.0, -1.0), Vec3::new(2.0, 2.0, 1.0)));
    // raw (time-parametrized) steps over a fixed integration time
    let drift = |h: f64, steps: usize| {
        let mut cfg = TraceConfig::new(Seeding::Random { count: 1, seed: 0 }, h, steps);
        cfg.normalize_steps = false;
        let (v, _) = trace_from(&circular, Vec3::new(1.0, 0.0, 0.0), &cfg, 1.0);
        let p = v.last().unwrap();
        (p.x.hypot(p.y) - 1.0).abs()
    };
    let mut ratios = Vec::new();
    for (h, steps) in [(0.2, 30), (0.1, 60), (0.05, 120)] {
        let r = drift(h, steps) / drift(h / 2.0, steps * 2);
        ensure((8.0..=32.0).contains(&r), || format!("h={h}: drift ratio {r:.2}"))?;
        ratios.push(format!("{r:.3}"));
    }

    let abc = VectorField::analytic(AnalyticKind::abc_default(), Aabb::new(Vec3::ZERO, Vec3::new(6.0, 6.0, 6.0)));
    let mut worst: f64 = 0.0;
    for h in [0.1, 0.05, 0.01] {
        let ds = trace(&abc, &TraceConfig::new(Seeding::Random { count: 16, seed: 11 }, h, 300)).map_err(|e| e.to_string())?;
        for line in &ds.lines {
            for w in line.vertices.windows(2) {
                worst = worst.max(((w[0].dist(w[1]) - h) / h).abs());
            }
        }
    }
    ensure(worst <= 1e-9, || format!("spacing error {worst:.2e}"))?;
    Ok(format!("drift ratios {} per halving; spacing max rel err {worst:.1e}", ratios.join(", ")))
}

// ---------------------------------------------------------------- layout

fn aggregation_oracle(tree: &CommunityTree, g: &Csng) -> Result<usize, String> {
    let cg = aggregate(tree, g).map_err(|e| e.to_string())?;
    let members: Vec<Vec<usize>> = cg.nodes.iter().map(|c| tree.members_of(c.id).unwrap()).collect();
    let w = |a: usize, b: usize| g.edge(a, b).map_or(0.0, |e| e.weight);
    let mut nonzero = 0;
    for i in 0..cg.nodes.len() {
        for j in i + 1..cg.nodes.len() {
            let mut want = 0.0;
            for &a in &members[i] {
                for &b in &members[j] {
                    want += match g.directedness {
                        Directedness::Undirected => w(a, b),
                        Directedness::Directed => w(a, b) + w(b, a),
                    };
                }
            }
            let got = cg.weight_between(cg.nodes[i].id, cg.nodes[j].id);
            ensure((got - want).abs() <= 1e-9 * want.max(1.0), || format!("pair {i},{j}: {got} vs {want}"))?;
            nonzero += usize::from(want > 0.0);
        }
    }
    ensure(nonzero == cg.edges.len(), || "edge count differs from oracle".into())?;
    Ok(cg.nodes.len())
}

fn layout() -> Outcome {
    let node = |id| CompoundNode { id, cardinality: 9, depth: 1, parent: Some(ROOT) };
    let cg = CompoundGraph { nodes: vec![node(1), node(2)], edges: vec![CompoundEdge { u: 0, v: 1, weight: 1.0 }] };
    let params = LayoutParams { k_r: 0.0, max_iter: 200_000, tol: 1e-5, ..LayoutParams::default() };
    let st = run_to_convergence(&cg, LayoutState::with_positions(&cg, vec![[-5.0, 2.0], [6.0, -1.0]], &params), &params);
    let rest = params.rest(st.radii[0], st.radii[1]);
    let d = st.distance(0, 1);
    ensure(st.converged, || "two-node spring did not converge".into())?;
    ensure((d - rest).abs() <= 0.01 * rest, || format!("spring length {d} vs rest {rest}"))?;

    let mut ds = synthetic::random_walks(48, 41, 100.0, 5);
    ds.decompose(4).map_err(|e| e.to_string())?;
    ensure(ds.segments.len() <= 500, || "dataset too large for the oracle".into())?;
    let mut checked = 0;
    for opts in [BuildOptions::knn(8), BuildOptions::rbn(Radius::Fraction(0.08))] {
        let g = build_csng(&ds, &opts).map_err(|e| e.to_string())?;
        let mut tree = detect(&g, 1.0, 0).map_err(|e| e.to_string())?;
        checked += aggregation_oracle(&tree, &g)?;
        let leaf = tree.leaves().max_by_key(|l| l.cardinality).unwrap().id;
        if let SplitOutcome::Split { .. } = tree.split_node(&g, leaf, 1.0, 0).map_err(|e| e.to_string())? {
            checked += aggregation_oracle(&tree, &g)?;
            tree.set_collapsed(leaf, true).map_err(|e| e.to_string())?;
            checked += aggregation_oracle(&tree, &g)?;
        }
        let cg = aggregate(&tree, &g).map_err(|e| e.to_string())?;
        let p = LayoutParams::default();
        let (a, b) = (run_layout(&cg, 9, &p), run_layout(&cg, 9, &p));
        ensure(a == b, || "same seed gave different layouts".into())?;
    }
    Ok(format!("spring {d:.4} vs rest {rest:.4}; deterministic; {checked} compound nodes match the pairwise oracle"))
}

// ---------------------------------------------------------------- baseline

fn gram_deviation(c: &Matrix) -> f64 {
    let mut worst: f64 = 0.0;
    for a in 0..c.rows {
        for b in 0..c.rows {
            let dot: f64 = c.row(a).iter().zip(c.row(b)).map(|(x, y)| x * y).sum();
            worst = worst.max((dot - f64::from(u8::from(a == b))).abs());
        }
    }
    worst
}

fn baseline() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut runs = 0;
    let mut gram: f64 = 0.0;
    for trial in 0..40u64 {
        let rows = rng.random_range(10..120);
        let cols = rng.random_range(2..12);
        let x = Matrix::from_rows(&(0..rows).map(|_| (0..cols).map(|j| rng.random::<f64>() * (j + 1) as f64).collect()).collect::<Vec<_>>());
        for init in [KMeansInit::PlusPlus, KMeansInit::Random] {
            let km = kmeans(&x, rng.random_range(1..8), trial, KMeansOptions { init, ..KMeansOptions::default() }).map_err(|e| e.to_string())?;
            ensure(km.inertia_history.windows(2).all(|w| w[1] <= w[0]), || format!("trial {trial}: inertia rose"))?;
            runs += 1;
        }
        let p = pca(&x, rows.min(cols)).map_err(|e| e.to_string())?;
        gram = gram.max(gram_deviation(&p.components));
    }
    ensure(gram <= 1e-9, || format!("PCA gram deviation {gram:.2e}"))?;

    let data = synthetic::three_bundles(10, 1).decomposed(4).map_err(|e| e.to_string())?;
    let truth = data.segment_labels();
    // neighborhoods at bundle scale; a short-range KNN graph splits each bundle along its length
    let g = build_csng(&data.dataset, &BuildOptions::rbn(Radius::Fraction(0.25))).map_err(|e| e.to_string())?;
    let tree = detect(&g, 1.0, 0).map_err(|e| e.to_string())?;
    let louvain_labels = tree.leaf_assignment();
    let km = run_baseline(&data.dataset, BaselineParams { dim: 5, k: 3, seed: 0, resample: 8 }).map_err(|e| e.to_string())?;
    let ari = |a: &[usize], b: &[usize]| compare(a, b).map(|c| c.ari).map_err(|e| e.to_string());
    let (al, ak, alk) = (ari(&louvain_labels, &truth)?, ari(&km.assignment, &truth)?, ari(&louvain_labels, &km.assignment)?);
    ensure(al >= 0.9, || format!("Louvain ARI {al:.3}"))?;
    ensure(ak >= 0.9, || format!("k-means ARI {ak:.3}"))?;
    ensure(alk >= 0.8, || format!("Louvain vs k-means ARI {alk:.3}"))?;
    Ok(format!(
        "{runs} k-means runs monotone; PCA gram dev {gram:.1e}; ARI Louvain {al:.3}, k-means {ak:.3}, between {alk:.3}"
    ))
}

// ---------------------------------------------------------------- end to end

fn validate(schema_name: &str, path: &Path) -> Result<(), String> {
    let (_, schema) = csng::schemas::ALL.iter().find(|(n, _)| *n == schema_name).unwrap();
    let schema: Value = serde_json::from_str(schema).unwrap();
    let doc: Value = serde_json::from_slice(&std::fs::read(path).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let v = jsonschema::validator_for(&schema).map_err(|e| e.to_string())?;
    let first = v.iter_errors(&doc).next().map(|e| format!("{}: {e} at {}", path.display(), e.instance_path));
    first.map_or(Ok(()), Err)
}

fn end_to_end() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = dir.path();
    let steps: [(&[&str], Option<(&str, &str)>); 5] = [
        (&["trace", "--field", "abc", "--seeding", "uniform:8x8x8", "--step", "0.05", "--steps", "256", "--out", "lines.json"], Some(("lines", "lines.json"))),
        (&["decompose", "--lines", "lines.json", "-L", "4", "--out", "segs.json"], Some(("segments", "segs.json"))),
        (&["build", "--segs", "segs.json", "--method", "knn", "--k", "60", "--metric", "longest", "--out", "g.bin"], None),
        (&["detect", "--graph", "g.bin", "--resolution", "1.0", "--seed", "0", "--out", "communities.json"], Some(("communities", "communities.json"))),
        (&["layout", "--communities", "communities.json", "--graph", "g.bin", "--seed", "0", "--out", "layout.json"], Some(("layout", "layout.json"))),
    ];
    let started = Instant::now();
    let mut validated = 0;
    for (args, check) in steps {
        let out = Command::new(env!("CARGO_BIN_EXE_csng")).current_dir(d).args(args).output().map_err(|e| e.to_string())?;
        ensure(out.status.success(), || format!("{} failed: {}", args[0], String::from_utf8_lossy(&out.stderr)))?;
        if let Some((schema, file)) = check {
            validate(schema, &d.join(file))?;
            validated += 1;
        }
    }
    let secs = started.elapsed().as_secs_f64();
    ensure(secs < 120.0, || format!("took {secs:.1}s"))?;
    let segs: Value = serde_json::from_slice(&std::fs::read(d.join("segs.json")).unwrap()).unwrap();
    Ok(format!(
        "512 lines, {} segments, {validated} JSON outputs schema-valid, {secs:.1}s",
        segs["segments"].as_array().map_or(0, Vec::len)
    ))
}

// ---------------------------------------------------------------- report

/// Criteria that are expected to fail; see the decisions ledger.
const KNOWN_FAILURES: &[(&str, &str)] =
    &[("modularity: ≥ 0.95× optimum on 20 random 8-node graphs", "Louvain local optimum on case 13, see ledger")];

fn main() {
    let mut histories = Vec::new();
    let criteria: Vec<(&str, Box<dyn FnOnce(&mut Vec<Vec<f64>>) -> Outcome>)> = vec![
        ("neighbor search exactness", Box::new(|_| neighbor_search())),
        ("distance-metric laws", Box::new(|_| metric_laws())),
        ("modularity: clique-pair optimum", Box::new(modularity_cliques)),
        ("modularity: ≥ 0.95× optimum on 20 random 8-node graphs", Box::new(modularity_random)),
        ("modularity: history non-decreasing", Box::new(|h| modularity_history(h))),
        ("resolution behavior", Box::new(|_| resolution_sweep())),
        ("hierarchy editing", Box::new(|_| hierarchy_editing())),
        ("decomposition laws", Box::new(|_| decomposition())),
        ("RK4 convergence and spacing", Box::new(|_| rk4())),
        ("layout", Box::new(|_| layout())),
        ("baseline", Box::new(|_| baseline())),
        ("end-to-end CLI", Box::new(|_| end_to_end())),
    ];
    let mut unexpected = 0;
    for (name, run) in criteria {
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(|| run(&mut histories)))
            .unwrap_or_else(|p| Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panicked".into())));
        let secs = started.elapsed().as_secs_f64();
        let known = KNOWN_FAILURES.iter().find(|(n, _)| *n == name).map(|(_, why)| *why);
        match (&outcome, known) {
            (Ok(detail), None) => println!("[PASS] {name}: {detail} ({secs:.1}s)"),
            (Err(detail), None) => {
                unexpected += 1;
                println!("[FAIL] {name}: {detail} ({secs:.1}s)");
            }
            (Err(detail), Some(why)) => println!("[FAIL] {name}: {detail} (known: {why}) ({secs:.1}s)"),
            (Ok(detail), Some(_)) => {
                unexpected += 1;
                println!("[FAIL] {name}: listed as a known failure but passed: {detail}; update the list");
            }
        }
    }
    if unexpected > 0 {
        println!("{unexpected} unexpected result(s)");
        std::process::exit(1);
    }
}
