// PCA + k-means over resampled segment features, compared with Louvain.

use csng::prelude::*;

pub fn run_example() -> Result<(), csng::Error> {
    let data = csng::synthetic::three_bundles(10, 1).decomposed(4)?;
    let truth = data.segment_labels();

    let km = run_baseline(&data.dataset, BaselineParams { dim: 5, k: 3, seed: 0, resample: 8 })?;
    let g = build_csng(&data.dataset, &BuildOptions::rbn(Radius::Fraction(0.25)))?;
    let communities = detect(&g, 1.0, 0)?.leaf_assignment();

    println!("explained variance {:?}", km.explained_variance);
    println!("k-means vs truth  ARI {:.3}", compare(&km.assignment, &truth)?.ari);
    println!("Louvain vs truth  ARI {:.3}", compare(&communities, &truth)?.ari);
    println!("Louvain vs k-means ARI {:.3}", compare(&communities, &km.assignment)?.ari);
    Ok(())
}

fn main() -> Result<(), csng::Error> {
    run_example()
}
