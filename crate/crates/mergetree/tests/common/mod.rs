#![allow(dead_code)]

use mergetree::tree::tree;
use mergetree::MergeTree;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const TOL: f64 = 1e-9;

pub fn t_a() -> MergeTree {
    tree(&[("a", 0.0, Some("r")), ("b", 1.0, Some("r")), ("r", 2.0, None)]).unwrap()
}

pub fn g_a() -> MergeTree {
    tree(&[("a'", 0.0, Some("r'")), ("b'", 1.0, Some("r'")), ("r'", 3.0, None)]).unwrap()
}

/// Generic random tree with `n ≥ 2` leaves; merges take two children, sometimes three.
pub fn random_tree(seed: u64, n: usize) -> MergeTree {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut recs: Vec<(String, f64, Option<String>)> = Vec::new();
    let mut roots: Vec<(usize, f64)> = Vec::new();
    for i in 0..n {
        let h = rng.random_range(0.0..1.0);
        recs.push((format!("l{i}"), h, None));
        roots.push((i, h));
    }
    let mut m = 0;
    while roots.len() > 1 {
        let k = if roots.len() >= 3 && rng.random_bool(0.2) { 3 } else { 2 };
        let mut kids = Vec::new();
        for _ in 0..k {
            kids.push(roots.swap_remove(rng.random_range(0..roots.len())));
        }
        let top = kids.iter().map(|k| k.1).fold(f64::MIN, f64::max);
        let h = top + rng.random_range(0.05..1.0);
        let id = recs.len();
        recs.push((format!("m{m}"), h, None));
        m += 1;
        for (c, _) in kids {
            recs[c].2 = Some(format!("m{}", m - 1));
        }
        roots.push((id, h));
    }
    let nodes: Vec<(&str, f64, Option<&str>)> = recs.iter().map(|(i, h, p)| (i.as_str(), *h, p.as_deref())).collect();
    tree(&nodes).unwrap()
}
