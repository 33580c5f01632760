//! Validate a coupling between two small trees and print its per-vertex costs.

use mergetree::coupling::{Coupling, CouplingContext};
use mergetree::tree::tree;

fn main() {
    let t = tree(&[("a", 0.0, Some("r")), ("b", 1.0, Some("r")), ("r", 2.0, None)]).unwrap();
    let g = tree(&[("a'", 0.0, Some("r'")), ("b'", 1.0, Some("r'")), ("r'", 3.0, None)]).unwrap();
    for pairs in [vec![("a", "a'"), ("b", "b'"), ("r", "r'")], vec![("a", "a'")], vec![("a", "a'"), ("r", "r'")]] {
        match Coupling::from_ids(&t, &g, &pairs) {
            Ok(c) => {
                let ctx = CouplingContext::new(&t, &g, &c);
                let rep = ctx.report();
                println!("{pairs:?}: norm {} special {}", rep.norm_inf, ctx.is_special());
                for v in rep.t.iter().chain(&rep.g) {
                    println!("  {:>3} {:>5} {:?}", v.id, v.cost, v.case);
                }
            }
            Err(e) => println!("{pairs:?}: rejected, {e}"),
        }
    }
}
