// Nearest-neighbor and radius queries over curve segments.

use csng::prelude::*;

pub fn run_example() -> Result<(), csng::Error> {
    let mut ds = csng::synthetic::random_walks(100, 41, 100.0, 1);
    ds.decompose(4)?;
    let tree = SegmentKdTree::build(&ds.segments, 16)?;

    for metric in SegmentDistanceMetric::ALL {
        let knn = tree.knn(0, 5, metric)?;
        let ids: Vec<usize> = knn.neighbors.iter().map(|n| n.id).collect();
        println!("{metric:>8}: 5 nearest to segment 0 = {ids:?}");
    }
    let r = 0.05 * ds.bounds_diagonal;
    let rbn = tree.rbn(0, r, SegmentDistanceMetric::Longest)?;
    println!("{} segments within {r:.2}", rbn.neighbors.len());
    Ok(())
}

fn main() -> Result<(), csng::Error> {
    run_example()
}
