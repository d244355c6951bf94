// Build KNN and radius neighborhood graphs and round-trip them through both graph formats.

use csng::prelude::*;

pub fn run_example() -> Result<(), csng::Error> {
    let mut ds = csng::synthetic::three_bundles(8, 2).dataset;
    ds.decompose(4)?;

    let knn = build_csng(&ds, &BuildOptions::knn(10))?;
    let rbn = build_csng(&ds, &BuildOptions::rbn(Radius::Fraction(0.1)))?;
    println!("knn: {} edges ({:?})", knn.logical_edge_count(), knn.directedness);
    println!("rbn: {} edges ({:?})", rbn.logical_edge_count(), rbn.directedness);

    let mut bin = Vec::new();
    knn.write_binary(&mut bin).expect("in-memory write");
    let back = Csng::read_binary(bin.as_slice())?;
    assert_eq!(back.logical_edge_count(), knn.logical_edge_count());

    let mut csv = Vec::new();
    rbn.write_csv(&mut csv).expect("in-memory write");
    let back = Csng::read_csv(csv.as_slice(), Some(rbn.node_count))?;
    assert!(back.is_symmetric());
    println!("{}", String::from_utf8_lossy(&csv).lines().take(3).collect::<Vec<_>>().join("\n"));
    Ok(())
}

fn main() -> Result<(), csng::Error> {
    run_example()
}
