// Split, merge and collapse communities in the hierarchy.

use csng::community::{CommunityError, ROOT};
use csng::prelude::*;

pub fn run_example() -> Result<(), csng::Error> {
    let data = csng::synthetic::two_bundles_and_vortex(8, 4).decomposed(4)?;
    let g = build_csng(&data.dataset, &BuildOptions::knn(8))?;
    let mut tree = detect(&g, 1.0, 0)?;
    println!("detected {} communities", tree.root().children.len());

    let big = tree.root().children[0];
    let children = match tree.split_node(&g, big, 0.5, 0)? {
        SplitOutcome::Split { children } => children,
        SplitOutcome::NoSplit => {
            println!("node {big} has no substructure at γ = 0.5");
            return Ok(());
        }
    };
    println!("split {big} into {children:?}");

    let other = tree.root().children.iter().copied().find(|&c| c != big).expect("two root communities");
    let merged = tree.merge_nodes(&[children[0], other], MergeOptions::default())?;
    println!("merged {} and {other} into {merged} under {:?}", children[0], tree.node(merged)?.parent);

    if let SplitOutcome::Split { children: inner } = tree.split_node(&g, merged, 1.0, 0)? {
        // nodes on different branches cannot be merged unless asked to merge at the common ancestor
        let rest = tree.node(big).map(|n| n.children.clone()).unwrap_or_default();
        if let Some(&x) = rest.first() {
            match tree.merge_nodes(&[x, inner[0]], MergeOptions::default()) {
                Err(CommunityError::NotMergeable { .. }) => println!("{x} and {} are on different branches", inner[0]),
                other => println!("unexpected: {other:?}"),
            }
        }
    }

    tree.set_collapsed(merged, true)?;
    tree.validate()?;
    let cg = aggregate(&tree, &g)?;
    println!("{} visible nodes, root is {ROOT}", cg.nodes.len());
    Ok(())
}

fn main() -> Result<(), csng::Error> {
    run_example()
}
