//! Prune short leaves, check the pruning coupling, and find the ε for a leaf budget.

use mergetree::prune::{check_pruning_lemma, prune, prune_to_leaf_budget};
use mergetree::tree::tree;

fn main() {
    let t = tree(&[
        ("a", 0.0, Some("p")),
        ("b", 0.9, Some("p")),
        ("c", 0.5, Some("q")),
        ("d", 1.8, Some("q")),
        ("p", 1.0, Some("r")),
        ("q", 2.0, Some("r")),
        ("r", 3.0, None),
    ])
    .unwrap();
    for eps in [0.05, 0.3, 1.0, 2.0] {
        let res = prune(&t, eps);
        let rep = check_pruning_lemma(&t, &res);
        let removed: Vec<String> = res.log.iter().map(|r| format!("{}:{:?}", r.id, r.kind)).collect();
        println!("ε={eps}: {} leaves, removed {removed:?}, coupling cost {} ≤ ε/2: {}", res.tree.leaf_count(), rep.cost, rep.pass());
    }
    for n in [3, 2, 1] {
        let (eps, res) = prune_to_leaf_budget(&t, n);
        println!("budget {n}: ε* = {eps}, leaves {}", res.tree.leaf_count());
    }
}
