//! Lower and upper bounds from the bottom-up tables, the witness coupling, and
//! the pruned estimate on larger trees.

use mergetree::bench::random_pair;
use mergetree::bounds::{d_opt, interleaving_bounds, interleaving_bounds_with, BoundsConfig};
use mergetree::oracle::{exact_interleaving, OracleConfig};

fn main() {
    let (t, g) = random_pair(1, 5, 0);
    let b = interleaving_bounds(&t, &g).unwrap();
    let (d, _) = exact_interleaving(&t, &g, &OracleConfig::default()).unwrap();
    println!("5 leaves: {:.6} ≤ d_I = {d:.6} ≤ {:.6}, witness norm {:.6}", b.lower, b.upper, b.witness_norm);
    let plain = interleaving_bounds_with(&t, &g, &BoundsConfig { collapse: false, ..Default::default() }).unwrap();
    println!("without the collapse term the lower bound is {:.6}", plain.lower);

    let (t, g) = random_pair(1, 12, 0);
    let b = interleaving_bounds(&t, &g).unwrap();
    println!("12 leaves: [{:.6}, {:.6}] in {:.0} ms, root pair {:?}", b.lower, b.upper, b.ms, b.root_pair);

    let (t, g) = random_pair(1, 60, 0);
    let e = d_opt(&t, &g, 10, &BoundsConfig::default()).unwrap();
    println!("60 leaves pruned to {:?} at ε = {:.4}: d_opt = {:.6}", e.leaves, e.eps, e.value);
}
