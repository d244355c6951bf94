// Louvain communities at several resolutions.

use csng::community::UndirectedWeightedGraph;
use csng::prelude::*;

pub fn run_example() -> Result<(), csng::Error> {
    let mut ds = csng::synthetic::cylinder_like(8, 3)?;
    ds.decompose(4)?;
    let g = build_csng(&ds, &BuildOptions::knn(10))?;
    let ug = UndirectedWeightedGraph::from_csng(&g);

    for resolution in [0.05, 0.1, 0.5, 1.0] {
        let r = louvain(&ug, resolution, 0)?;
        println!(
            "γ = {resolution:<4}: {:>3} communities, Q = {:.4} after {} phases",
            r.partition.community_count(),
            r.modularity,
            r.history.len()
        );
    }

    let tree = detect(&g, 1.0, 0)?;
    let doc = tree.to_json();
    println!("{} root communities", tree.root().children.len());
    println!("{}", serde_json::to_string(&doc).expect("serializable").chars().take(120).collect::<String>());
    Ok(())
}

fn main() -> Result<(), csng::Error> {
    run_example()
}
