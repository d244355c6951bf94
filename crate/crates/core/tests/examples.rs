macro_rules! example {
    ($module:ident, $file:literal) => {
        #[allow(dead_code)]
        mod $module {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", $file));
        }

        #[test]
        fn $module() {
            $module::run_example().expect($file);
        }
    };
}

example!(trace_streamlines, "trace_streamlines.rs");
example!(decompose_lines, "decompose_lines.rs");
example!(segment_neighbors, "segment_neighbors.rs");
example!(build_graph, "build_graph.rs");
example!(detect_communities, "detect_communities.rs");
example!(refine_hierarchy, "refine_hierarchy.rs");
example!(compound_layout, "compound_layout.rs");
example!(pca_kmeans_baseline, "pca_kmeans_baseline.rs");
