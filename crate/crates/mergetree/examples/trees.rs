//! Build merge trees by hand and from point clouds, then inspect them.

use mergetree::linkage::{single_linkage_tree, PointCloud};
use mergetree::tree::tree;

fn main() {
    let t = tree(&[("a", 0.0, Some("m")), ("b", 0.5, Some("m")), ("c", 1.0, Some("r")), ("m", 2.0, Some("r")), ("r", 3.0, None)])
        .expect("valid tree");
    let (a, b, c) = (t.vertex("a").unwrap(), t.vertex("b").unwrap(), t.vertex("c").unwrap());
    println!("vertices {}, leaves {}, root {}", t.len(), t.leaf_count(), t.id(t.root()));
    println!("lca(a, b) = {}, lca(a, c) = {}", t.id(t.lca(a, b)), t.id(t.lca(a, c)));
    println!("lowest leaf {} at height {}", t.id(t.argmin()), t.sub_min(t.root()));

    let cloud = PointCloud::Points(vec![[0.0, 0.0], [0.0, 1.0], [0.0, 3.0], [4.0, 3.0]]);
    let s = single_linkage_tree(&cloud).expect("finite cloud");
    println!("single linkage of 4 points: {} merges, generic = {}", s.len() - s.leaf_count(), s.is_generic());
    let g = s.perturb_to_generic(1e-6).expect("small jitter");
    println!("after jitter: generic = {}", g.is_generic());
    println!("{}", g.to_json());
}
