//! The min-max program of one root pair: instantiate, dump, solve, and check
//! the optimum against every selection.

use mergetree::bounds::{bottom_up, BoundsConfig};
use mergetree::program::{build_program, linearize, CostTable, Direction, Penalty};
use mergetree::tree::tree;

fn main() {
    let t = tree(&[("a", 0.0, Some("m")), ("b", 0.3, Some("m")), ("c", 0.8, Some("r")), ("m", 1.5, Some("r")), ("r", 2.5, None)]).unwrap();
    let g = tree(&[("a", 0.1, Some("m")), ("b", 0.6, Some("m")), ("c", 1.0, Some("r")), ("m", 1.2, Some("r")), ("r", 2.2, None)]).unwrap();
    for dir in [Direction::Up, Direction::Down] {
        let tab = bottom_up(&t, &g, dir, &BoundsConfig::default()).unwrap();
        let mut costs = CostTable::new(t.len(), g.len());
        for x in 0..t.len() {
            for y in 0..g.len() {
                costs.set(x, y, tab.get(x, y));
            }
        }
        let p = build_program(&t, &g, t.root(), g.root(), &costs, dir, Penalty::Root).unwrap();
        let dump = linearize(p.clone()).dump();
        println!("{dir:?}: {} binary variables, {} constraints, {} objective terms", dump.binary.len(), dump.constraints.len(), dump.objective.len());
        let r = p.solve_exact().unwrap();
        let sel: Vec<(&str, &str)> = r.selected.iter().map(|&(x, y)| (t.id(x), g.id(y))).collect();
        println!("  optimum {} with {sel:?} after {} nodes", r.value, r.nodes);
        println!("  re-evaluated: {:?}", p.evaluate(&r.selected));
    }
}
