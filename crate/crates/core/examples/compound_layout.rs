// Lay out the visible communities as a compound graph.

use csng::prelude::*;

pub fn run_example() -> Result<(), csng::Error> {
    let mut ds = csng::synthetic::three_bundles(10, 1).dataset;
    ds.decompose(4)?;
    let g = build_csng(&ds, &BuildOptions::knn(8))?;
    let tree = detect(&g, 1.0, 0)?;
    let cg = aggregate(&tree, &g)?;

    let params = LayoutParams::default();
    let st = run_layout(&cg, 0, &params);
    println!("{} nodes, {} edges, converged = {} after {} iterations", cg.nodes.len(), cg.edges.len(), st.converged, st.iteration);

    let doc = st.to_json(&cg);
    for n in doc.nodes.iter().take(4) {
        println!("{}", serde_json::to_string(n).expect("serializable"));
    }
    Ok(())
}

fn main() -> Result<(), csng::Error> {
    run_example()
}
